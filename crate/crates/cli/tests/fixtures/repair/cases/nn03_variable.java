package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findEmpty() {
        Calc calc = new Calc();
        String r = calc.find("");
        assertNotNull(r);
    }
}

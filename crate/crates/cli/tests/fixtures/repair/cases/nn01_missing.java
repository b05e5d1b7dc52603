package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findY() {
        Calc calc = new Calc();
        assertNotNull(calc.find("y"));
    }
}

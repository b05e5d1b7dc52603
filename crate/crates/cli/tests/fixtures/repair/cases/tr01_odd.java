package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void sevenIsEven() {
        Calc calc = new Calc();
        assertTrue(calc.isEven(7));
    }
}
